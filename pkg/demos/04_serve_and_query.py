"""Serve a trained model over HTTP and walk the two-phase prediction flow.

Phase one posts the fields available from the initial incident call; phase
two re-posts once responder information arrives, which typically sharpens
the band probabilities and revises the predicted duration.
"""

import json
import threading
from urllib.request import Request, urlopen

from incident_duration import GeneratorConfig, TrainConfig, generate, train_framework
from incident_duration.service import make_server

records, _ = generate(GeneratorConfig(n_records=1500, seed=7))
config = TrainConfig(seed=7, n_trees=25, classifier_gbm_rounds=15, regressor_gbm_rounds=25)
model = train_framework(records, config)

server = make_server("127.0.0.1", 0, model)
threading.Thread(target=server.serve_forever, daemon=True).start()
host, port = server.server_address
base = f"http://{host}:{port}"
print(f"service listening at {base}")


def post(body):
    req = Request(f"{base}/v1/predict", method="POST",
                  data=json.dumps(body).encode(), headers={"Content-Type": "application/json"})
    with urlopen(req) as resp:
        return json.loads(resp.read())


with urlopen(f"{base}/v1/health") as r:
    print("health:", json.loads(r.read()))
with urlopen(f"{base}/v1/schema") as r:
    fields = json.loads(r.read())["fields"]
    print(f"schema advertises {len(fields)} fields "
          f"({sum(f['required'] for f in fields)} required, FS2-only: "
          f"{[f['name'] for f in fields if f['feature_set'] == 'FS2']})")

initial_call = {
    "start_time": "2018-11-02T17:20",
    "direction": "E",
    "county_region": "Central",
    "city_number": 4,
    "event_type": "crash3",
    "lanes": 3,
    "only_shoulders_closed": False,
    "vehicles": "3+",
    "trucks": "1",
    "injuries": True,
    "fatalities": False,
    "detection_method": "cameras",
    "route_id": "I-80",
    "measure": 212.7,
}

phase1 = post({"request_id": "demo-1", "incident": initial_call})
print("\nphase 1 (initial call, FS1):")
print(f"  band={phase1['band']}  duration={phase1['duration_minutes']:.1f} min  "
      f"probs={[round(p, 3) for p in phase1['band_probabilities']]}")
print(f"  actions: {phase1['recommended_actions']}")

refined = dict(initial_call, responders=["police", "tow", "ems"], terrain="rolly")
phase2 = post({"request_id": "demo-2", "incident": refined})
print("\nphase 2 (responders on scene, FS2):")
print(f"  band={phase2['band']}  duration={phase2['duration_minutes']:.1f} min  "
      f"probs={[round(p, 3) for p in phase2['band_probabilities']]}")
print(f"  actions: {phase2['recommended_actions']}")
print(f"  feature sets used: {phase1['feature_set_used']} -> {phase2['feature_set_used']}")

server.shutdown()
server.server_close()
