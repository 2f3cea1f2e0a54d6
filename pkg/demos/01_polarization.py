#%% Polar transform and successive-cancellation posteriors
import numpy as np

from polarcoord.construction import estimate_entropies
from polarcoord.model import h2
from polarcoord.polar_core import PairSource, brute_posterior, polar_transform, sc_posterior

rng = np.random.default_rng(0)

u = rng.integers(0, 2, 8)
v = polar_transform(u)
print("u        ", u)
print("v = u G_8", v)
print("G_8 twice", polar_transform(v))

#%% SC against exhaustive enumeration
# B = W xor Bernoulli(0.11), W uniform
p = 0.11
src = PairSource(0.5 * np.array([[1 - p, p], [p, 1 - p]]))
b, w = src.sample((8,), rng)
v = polar_transform(b)
for j in range(8):
    print(j, round(sc_posterior(j, v[:j], w, src), 6), round(brute_posterior(j, v[:j], w, src), 6))

#%% Entropies polarize as n grows
for n in (16, 256, 4096):
    h = estimate_entropies(src, n, samples=400, rng=rng)
    print(f"n={n:5d}  mean {h.mean():.4f} (h2={h2(p):.4f})  "
          f"near 0: {np.mean(h < 0.01):.3f}  near 1: {np.mean(h > 0.99):.3f}")
