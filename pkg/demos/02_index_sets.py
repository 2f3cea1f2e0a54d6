#%% Index sets for the reference model
# S uniform, U = S xor Bernoulli(0.11), X = U, BSC(0.05), Shat = U
from polarcoord.construction import ChainingInfeasible, construct
from polarcoord.model import check_region_membership, derive_marginals, reference_model

model = reference_model()
dm = derive_marginals(model)
print(f"I(U;S)={dm.i_us:.4f}  I(U;Y)={dm.i_uy:.4f}  margin={check_region_membership(model).margin:.4f}")

#%% One exponent for every threshold
# At desk-scale n the very-high-entropy set V_{V|S} is too thin for chaining.
for n in (256, 1024, 4096):
    try:
        construct(model, n, beta=0.25, seed=0)
        print(n, "feasible")
    except ChainingInfeasible as err:
        print(n, "infeasible:", err)

#%% Separate exponent for the very-high-entropy threshold
for n in (256, 1024, 4096):
    s = construct(model, n, beta=0.275, beta_v=0.08, seed=0).sets
    print(f"n={n:5d}  |A1|={s.a1.size:5d} |A2|={s.a2.size:4d} |A3|={s.a3.size:3d} |A4|={s.a4.size:5d}  "
          f"|V_V|S|/n={s.v_v_given_s.size / n:.3f} |H_V|Y|/n={s.h_v_given_y.size / n:.3f}")
