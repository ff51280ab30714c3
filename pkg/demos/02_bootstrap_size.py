"""
Choosing the bootstrap size M
=============================

Two rules pick M from a pilot run: the asymptotic rule uses the plain VB
variance and the bagged variance at M = n; the finite-sample rule also
accounts for the prior variance of the functional of interest.
"""

from vbag.bootstrap import SizeSelectionInputs, asymptotic_optimal_size, finite_sample_size_details
from vbag.errors import NegativeDiscriminant
from vbag.numerics import RngStream
from vbag.scenarios import ScenarioConfig, generate_data, resolve_bootstrap_size

###############################################################################
# By hand: plain VB variance 1, bagged variance 2, n = 100.
inputs = SizeSelectionInputs(v_n=1.0, v_n_star=2.0, n=100, v0=10.0)
print("asymptotic rule:", asymptotic_optimal_size(inputs))
det = finite_sample_size_details(inputs)
print("finite-sample rule: M = %d (raw %.3f, sigma^2 %.3f, s^2 %.3f)" % (det.size, det.raw, det.sigma_sq, det.s_sq))

###############################################################################
# As the prior variance grows the finite-sample rule approaches the
# asymptotic one. A prior variance close to the VB variance can make the
# square root undefined; scenario runs then fall back to the asymptotic rule.
for v0 in (2.0, 5.0, 10.0, 1e3, 1e8):
    try:
        det = finite_sample_size_details(SizeSelectionInputs(1.0, 2.0, 100, v0))
        print("v0 = %-8g  M = %d" % (v0, det.size))
    except NegativeDiscriminant as exc:
        print("v0 = %-8g  %s" % (v0, exc))

###############################################################################
# Inside a scenario the pilot quantities come from the data.
cfg = ScenarioConfig.from_dict({"scenario": "sparse-reg", "variant": "S1", "M_policy": "eq4", "B": 20})
data = generate_data(cfg, RngStream(0))
info = resolve_bootstrap_size(cfg, data, RngStream(1))
print("sparse regression pilot: v_n %.3g, v_n* %.3g -> M = %d" % (info["v_n"], info["v_n_star"], info["M"]))
