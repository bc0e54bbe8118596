# # Direction versus distance
#
# Two clusters point roughly the same way but sit at very different
# distances from the origin.  k-means groups points by position, while
# spherical k-means and EM-ONMF group them by direction only.

# In[1]:

import numpy as np

from onmfkit import em_onmf, kmeans, spherical_kmeans
from onmfkit.data import generate_directional_clusters, inline_clusters_spec, separated_clusters_spec
from onmfkit.metrics import accuracy

ds = generate_directional_clusters(inline_clusters_spec(), seed=0)
M = ds.matrix
norms = np.linalg.norm(M, axis=0)
angles = np.degrees(np.arctan2(M[1], M[0]))
for c in (0, 1):
    sel = ds.labels == c
    print("class %d: norm %.2f-%.2f, angle %.1f-%.1f deg"
          % (c, norms[sel].min(), norms[sel].max(), angles[sel].min(), angles[sel].max()))


# In[2]:

def compare(M, labels, seeds=range(5)):
    for name, fit in (("kmeans", kmeans), ("skm", spherical_kmeans)):
        acc = [accuracy(fit(M, 2, seed=s)[0], labels) for s in seeds]
        print("%-8s accuracy %.3f" % (name, np.mean(acc)))
    acc = [accuracy(em_onmf(M, 2, seed=s)[1], labels) for s in seeds]
    print("%-8s accuracy %.3f" % ("em-onmf", np.mean(acc)))


compare(M, ds.labels)

# The angular methods mix the wide, low-norm cluster into the tight one.

# ## Well-separated directions
#
# When the clusters differ in angle, all three agree.

# In[3]:

ds = generate_directional_clusters(separated_clusters_spec(), seed=0)
compare(ds.matrix, ds.labels)

# ## Scaling a point does not move it
#
# With the centroids fixed, the EM-ONMF assignment only looks at the
# direction of a point.

# In[4]:

from onmfkit.emonmf import assign_clusters

fact, p, _ = em_onmf(M, 2, seed=0)
scaled = M * np.random.default_rng(1).uniform(0.01, 100, M.shape[1])
print("assignments unchanged:", np.array_equal(assign_clusters(scaled, fact.U), p))
