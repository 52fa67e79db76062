"""From a communication graph to the scaled topology matrix and its spectrum.

Agent 1 is the leader.  Followers 2-3 and 4-5 form two undirected pairs, and
agents 2 and 4 can see the leader.  The scaling constant ``h`` keeps every
diagonal entry of the follower block positive.

    python3 demos/01_topology.py
"""
import numpy as np

from hinftrack import Adjacency, build_stochastic, follower_spectrum, has_leader_spanning_tree, validate

a = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1.2, 0.0, 2.0, 0.0, 0.0],
    [0.0, 2.0, 0.0, 0.0, 0.0],
    [1.5, 0.0, 0.0, 0.0, 1.9],
    [0.0, 0.0, 0.0, 1.9, 0.0],
])
adj = Adjacency(a)

report = validate(adj)
print("structural checks:", "ok" if report.ok else report.violations)
print("leader reaches every follower:", has_leader_spanning_tree(adj))

dec = build_stochastic(adj, h=0.20)
print(f"\nkappa0 = {dec.kappa0:g}, kappa = {dec.kappa:g}")
print("delta  =", dec.delta)
np.set_printoptions(precision=6, suppress=True)
print("D =\n", dec.D)
print("row sums:", dec.D.sum(axis=1))

spec = follower_spectrum(dec)
print("\nfollower-block eigenvalues:", spec.eigenvalues)
print(f"lambda0 = {spec.lambda0:.6f}")

# The follower block splits into two 2x2 blocks, so the spectrum has a
# closed form we can compare against.
for blk in (dec.D_breve[:2, :2], dec.D_breve[2:, 2:]):
    tr, det = np.trace(blk), np.linalg.det(blk)
    print("closed-form roots:", (tr - np.sqrt(tr**2 - 4 * det)) / 2, (tr + np.sqrt(tr**2 - 4 * det)) / 2)

# Breaking a symmetric pair is reported rather than raised.
bad = a.copy()
bad[1, 2] = 2.5
print("\nasymmetric variant:", validate(Adjacency(bad)).violations)
