# # Recovering the parts of the swimmer images
#
# Every swimmer image is a torso plus four limbs, each limb in one of four
# positions.  A rank-17 factorization with orthogonal, nonnegative V should
# put each of the 17 parts on its own row of V.

# In[1]:

import numpy as np

from onmfkit import em_onmf, generate_swimmer, onp_mf
from onmfkit.metrics import row_supports

M, parts = generate_swimmer()
active = np.flatnonzero(M.any(axis=0))
print("images x pixels:", M.shape, " active pixels:", active.size)


# Draw a part on the 32x32 frame as text.

# In[2]:

def show(pixels, side=32):
    frame = np.full(side * side, ".")
    frame[pixels] = "#"
    for row in frame.reshape(side, side):
        print("".join(row))


show(parts[1])


# ## EM-ONMF, best of 30 random starts
#
# The objective is non-convex, so keep the run with the lowest residual.

# In[3]:

runs = [em_onmf(M, 17, seed=s)[0] for s in range(30)]
best = min(runs, key=lambda f: f.objective)
print("best objective: %.3g" % best.objective)


# In[4]:

def matched(V):
    found = {tuple(np.intersect1d(s, active)) for s in row_supports(V)}
    return sum(tuple(p) in found for p in parts)


print("parts recovered by EM-ONMF: %d / 17" % matched(best.V))


# ## ONP-MF, one deterministic run

# In[5]:

fact, trace = onp_mf(M, 17)
print("iterations:", trace.iterations, " converged:", trace.converged)
print("parts recovered by ONP-MF: %d / 17" % matched(fact.V))

# Rows of V found by ONP-MF, one after the other.

# In[6]:

for s in row_supports(fact.V)[:3]:
    show(s)
    print()
