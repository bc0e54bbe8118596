# # Watching ONP-MF converge
#
# The iterate V stays orthonormal at every step.  Negative entries are
# pushed out gradually as the penalty grows.  This script runs it on a
# matrix with an exact orthogonal nonnegative factorization and writes the
# per-iteration trace to CSV.

# In[1]:

import sys

import numpy as np

from onmfkit import onp_mf
from onmfkit.data import generate_separable, write_results
from onmfkit.metrics import accuracy

ds = generate_separable(seed=0)
fact, trace = onp_mf(ds.matrix, 4)
print("converged:", trace.converged, " iterations:", trace.iterations)


# In[2]:

t = trace.column("t")
neg = trace.column("neg_residual")
orth = trace.column("orth_residual")
err = trace.column("error")
for i in np.unique(np.geomspace(1, len(t), 12).astype(int)) - 1:
    print("t=%5d  error %.3e  negativity %.3e  ||VV^T-I|| %.1e  rho %.3g"
          % (t[i], err[i], neg[i], orth[i], trace.column("rho")[i]))


# In[3]:

partition = fact.V.argmax(axis=0)
print("accuracy against planted clusters:", accuracy(partition, ds.labels))
print("largest orthogonality residual along the run: %.1e" % orth.max())


# Write everything out if a directory was given.

# In[4]:

if len(sys.argv) > 1:
    metrics = {"algorithm": "onp-mf", "dataset": ds.name, "k": 4, "seed": None,
               "accuracy": accuracy(partition, ds.labels), "iterations": trace.iterations,
               "seconds": trace.column("elapsed_ms")[-1] / 1e3, "final_error": err[-1],
               "final_orth_residual": orth[-1], "final_neg_residual": neg[-1]}
    write_results(sys.argv[1], metrics, partition, trace, fact.U, fact.V)
    print("wrote", sys.argv[1])
