"""
Tuning on a validation split and a miniature benchmark
======================================================

``grid_search`` picks lambda1, lambda2 and nu by validation error. The
benchmark repeats that across instances and model variants, here on a
reduced problem so the script finishes in about a minute.
"""

from fusedlogit import BenchmarkConfig, GridSpec, case_spec, grid_search, l01_error, make_instance
from fusedlogit.bench import VARIANTS, run_benchmark

inst = make_instance(case_spec("h", d=40), n_train=60, n_val=400, n_test=400, seed=5)
cache = {}
for variant in VARIANTS:
    params, res = grid_search(inst, GridSpec.for_variant(variant, "desk"), cache=cache)
    print(f"{variant:18s} {params}  test L01 {l01_error(res.B, inst.test):.3f}")
print("fits computed:", len(cache))

config = BenchmarkConfig(cases=["d", "h"], n_train=[40], n_instances=2, d=40,
                         n_val=300, n_test=300, seed=9)
report = run_benchmark(config)
for case in config.cases:
    medians = {m: round(report.median("test_error", case=case, model=m), 3) for m in VARIANTS}
    print(case, medians, "bayes", round(report.median("bayes_risk", case=case), 3))
