"""Walk through a six-point series: detect, build the conditioning set, test.

Run with ``python demos/worked_example.py``.
"""

import math

from cpinfer import TimeSeries, l0_S, l0_segment, make_raw_contrast, make_spanning_contrast, selective_p
from cpinfer.core import perturbation_path
from cpinfer.infer_l0 import l0_cost_sets
from cpinfer.pvalue import naive_p

y = TimeSeries([1, 1, 1, 2, 2, 2], sigma=1.0)
lam = 0.5

fit = l0_segment(y, lam)
print("changepoints:", fit.locations, "segment means:", fit.means)

# A contrast comparing points 2-3 with points 4-5.  Moving the data along
# this direction changes nu'y and nothing else.
nu = make_raw_contrast([0, 1, 1, -1, -1, 0])
path = perturbation_path(y, nu)
print("observed nu'y =", nu.dot(y))

# the forward cost functions up to t=3, as (u, phi) quadratics
print("\nforward cost set at t=3:")
print(l0_cost_sets(path, lam, 1, 3, "forward").dump())

S = l0_S(y, lam, 1, nu, "window", fit=fit)
print("\nphi values that keep a changepoint at 3:", list(S))

# the spanning contrast, conditioning on the whole location set
span = make_spanning_contrast(fit, 1, y.T)
S_full = l0_S(y, lam, 1, span, "full", fit=fit)
c = span.dot(y)
scale = math.sqrt(span.norm_sq)
print("\nspanning contrast nu'y =", round(c, 4), " S =", list(S_full))
print("selective p =", round(selective_p(S_full, c, scale), 4), " naive p =", round(naive_p(c, scale), 4))
