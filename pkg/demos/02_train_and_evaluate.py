"""Train the two-stage framework and read its evaluation report.

Runs the full-size defaults (about two to three minutes); shrink
``n_records`` and the tree/round counts for a quicker pass.
"""

import numpy as np

from incident_duration import (
    GeneratorConfig,
    TrainConfig,
    evaluate_framework,
    generate,
    predict_incident,
    split_records,
    train_framework,
)

records, _ = generate(GeneratorConfig())
config = TrainConfig()

model = train_framework(records, config)
train, test, validation = split_records(records, config.split_spec())

for name, part in (("test", test), ("validation", validation)):
    report, tree = evaluate_framework(model, part)
    print(f"--- {name} split ({len(part)} records) ---")
    print(f"classification: AUC={report.auc_macro:.3f}  accuracy={report.accuracy:.3f}  "
          f"recall S/M/L = {report.per_class_recall['S']:.2f}/{report.per_class_recall['M']:.2f}/{report.per_class_recall['L']:.2f}")
    sup = tree["regression"]["sup_mc"]
    oracle = tree["regression"]["oracle"]
    print("regression MAE (minutes), routed by predicted band vs true band:")
    for band in ("short", "medium", "long", "overall"):
        print(f"  {band:8s} predicted-band={sup[band]['mae']:7.2f}   true-band={oracle[band]['mae']:7.2f}")

print("\nsingle live prediction:")
p = predict_incident(model, test[0])
print(f"  band={p.band.name}  duration={p.duration_minutes:.1f} min  "
      f"probabilities={np.round(p.band_probabilities, 3).tolist()}  (truth: {test[0].duration_minutes:.1f} min)")
