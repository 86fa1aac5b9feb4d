"""Run the five-way framework comparison.

Compares the supervised two-stage framework (with and without
misclassification accounting) against k-means clustering with per-cluster
forests, censored linear fits routed by the classifier, and single
unclassified baselines. MAE is reported per true duration band. Full-size
run, about three to four minutes.
"""

from incident_duration import GeneratorConfig, TrainConfig, compare_frameworks, generate

records, _ = generate(GeneratorConfig())
config = TrainConfig()

result = compare_frameworks(records, config)

LABELS = {
    "sup_mc": "Sup_MC (predicted-band routing)",
    "with_class": "With_class (true-band routing)",
    "tobit_mc": "Tobit_MC (censored fits, routed)",
    "unsup": "Unsup (k-means clusters)",
    "without_class": "Without_class (single forest)",
    "tobit_without_class": "Tobit, no classification",
}

for split in ("test", "validation"):
    print(f"=== {split} split: MAE in minutes per true band ===")
    print(f"{'framework':36s} {'short':>8s} {'medium':>8s} {'long':>8s} {'overall':>8s}")
    for key, label in LABELS.items():
        row = result[split][key]
        print(f"{label:36s} {row['short']:8.2f} {row['medium']:8.2f} {row['long']:8.2f} {row['overall']:8.2f}")
    red = result[split]["reduction_pct"]
    print(f"{'reduction vs Without_class (%)':36s} {red['short']:8.1f} {red['medium']:8.1f} {red['long']:8.1f} {red['overall']:8.1f}")
    print()

c = result["clustering"]
print(f"clustering: k={c['k']}  silhouette standardized={c['silhouette_standardized']:.3f}  "
      f"raw={c['silhouette_raw']:.3f}  elbow pick={c['elbow_k']}")
print("inertia by k:", {k: round(v, 0) for k, v in c["inertia"].items()})
