#%% One chained transmission of k = 4 blocks
import numpy as np

from polarcoord.chain_codec import RandomnessSources, decode_chain, encode_chain
from polarcoord.construction import construct
from polarcoord.metrics import empirical_type
from polarcoord.model import reference_model
from polarcoord.simharness import simulate_dmc

model = reference_model()
n, k = 4096, 4
con = construct(model, n, beta=0.275, beta_v=0.08, seed=0)
sets = con.sets

rng = np.random.default_rng(1)
s = rng.integers(0, 2, (k, n))
rand = RandomnessSources.draw(sets, np.random.default_rng(2), np.random.default_rng(3))

chain = encode_chain(model, sets, s, rand, con.x_sets)
chain.y = simulate_dmc(chain.x, model.p_y_given_x, rng)
chain.y_last = simulate_dmc(chain.x_last, model.p_y_given_x, rng)
chain.attach(decode_chain(model, sets, chain.y, rand.shared(), rng, con.x_sets, chain.y_last))
print("all blocks recovered:", chain.decode_success())

#%% Where the randomness went
for entry in chain.ledger:
    print(entry)

#%% Empirical coordination of (S, X, Y, Shat)
target = model.target_sxyt()
for i in range(k):
    t = empirical_type([s[i], chain.x[i], chain.y[i], chain.s_hat[i]], target.shape)
    print(f"block {i}: tv = {t.tv(target):.4f}")
t = empirical_type([s.ravel(), chain.x.ravel(), chain.y.ravel(), chain.s_hat.ravel()], target.shape)
print(f"aggregate: tv = {t.tv(target):.4f}")
