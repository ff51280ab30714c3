"""
Spike-and-slab regression with bagging
======================================

Relative squared error of the VB coefficient estimate ``E[gamma_j beta_j]``
against least squares, for plain VB and for the bagged average, under
Student-t errors.
"""

from vbag.scenarios import ScenarioConfig, run_scenario

###############################################################################
# Each variant fixes the number of covariates and the sample size.
for variant in ("S1", "S3"):
    cfg = ScenarioConfig.from_dict({"scenario": "sparse-reg", "variant": variant, "reps": 4, "B": 30})
    report, _ = run_scenario(cfg)
    med = report["payload"]["rse_median"]
    print("%s  q=%d n=%d  median RSE  VB %.2e  VB bagging %.2e" % (variant, cfg.q, cfg.n, med["vb"], med["vb_bagging"]))

###############################################################################
# Inclusion probabilities of the first replication.
rep = report["payload"]["replications"][0]
print("true beta          ", report["payload"]["beta_true"][:6])
print("inclusion, VB      ", [round(p, 3) for p in rep["inclusion_vb"][:6]])
print("inclusion, bagging ", [round(p, 3) for p in rep["inclusion_vb_bagging"][:6]])
