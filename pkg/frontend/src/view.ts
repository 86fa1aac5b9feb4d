// Prediction rendering. Numbers shown here are taken verbatim from the
// service response; the only arithmetic is scaling probability bar widths.

import type { PredictionResponse } from "./api.js";

const BAND_NAMES: Record<string, string> = { S: "Short (< 30 min)", M: "Medium (30 min - 2 h)", L: "Long (> 2 h)" };
const BAND_LABELS = ["S", "M", "L"];

export function renderPrediction(
  doc: Document,
  container: HTMLElement,
  phase: "initial" | "refined",
  prediction: PredictionResponse,
): void {
  container.innerHTML = "";
  container.hidden = false;
  container.dataset.phase = phase;

  const title = doc.createElement("h3");
  title.className = "phase-title";
  title.textContent = phase === "initial" ? `Initial prediction (${prediction.feature_set_used})` : `Refined prediction (${prediction.feature_set_used})`;
  container.appendChild(title);

  const badge = doc.createElement("div");
  badge.className = `band-badge band-${prediction.band}`;
  badge.textContent = prediction.band;
  badge.title = BAND_NAMES[prediction.band] ?? prediction.band;
  container.appendChild(badge);

  const duration = doc.createElement("div");
  duration.className = "duration";
  duration.textContent = String(prediction.duration_minutes);
  container.appendChild(duration);

  const bars = doc.createElement("div");
  bars.className = "probability-bars";
  const total = prediction.band_probabilities.reduce((a, b) => a + b, 0);
  prediction.band_probabilities.forEach((p, i) => {
    const row = doc.createElement("div");
    row.className = "bar-row";
    const label = doc.createElement("span");
    label.className = "bar-label";
    label.textContent = BAND_LABELS[i];
    const bar = doc.createElement("div");
    bar.className = "bar";
    bar.style.width = `${(100 * p) / total}%`;
    const value = doc.createElement("span");
    value.className = "bar-value";
    value.textContent = String(p);
    row.appendChild(label);
    row.appendChild(bar);
    row.appendChild(value);
    bars.appendChild(row);
  });
  container.appendChild(bars);

  const actions = doc.createElement("ul");
  actions.className = "actions";
  for (const action of prediction.recommended_actions) {
    const li = doc.createElement("li");
    li.textContent = action;
    actions.appendChild(li);
  }
  container.appendChild(actions);

  const version = doc.createElement("div");
  version.className = "model-version";
  version.textContent = prediction.model_version;
  container.appendChild(version);
}
