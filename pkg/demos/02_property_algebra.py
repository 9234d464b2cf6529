"""Faux-Boolean property algebras, ultrafilters, and joint Born weights.

A property algebra is generated by mutually orthogonal projectors plus
everything orthogonal to their span.  The actually-possessed properties of
a system form an ultrafilter: exactly one atom holds, and membership of
any element reduces to subspace containment of that atom.
"""

import numpy as np

from modaldyn import (composite_generating_set, generate_faux_boolean,
                      joint_distribution, ultrafilter_state)
from modaldyn.algebra import join, meet, orthocomplement
from modaldyn.hilbert import projector_from_vector

# --- a small algebra in 3 dimensions ---------------------------------------

ray = np.diag([1.0, 0.0, 0.0]).astype(complex)
alg = generate_faux_boolean([ray], total_dim=3)
print(f"one ray in 3 dimensions generates {len(alg.elements)} enumerated elements")
print(f"atoms: {len(alg.atoms)} (the ray and its 2-dim orthocomplement)")

state = ultrafilter_state(alg, ray)
print(f"m(ray) = {state.holds(ray)}")
print(f"m(complement) = {state.holds(orthocomplement(ray))}")
print(f"m(ray v complement) = {state.holds(join(ray, orthocomplement(ray)))}")
print(f"m(ray ^ complement) = {state.holds(meet(ray, orthocomplement(ray)))}")

# Any subspace of the orthocomplement block belongs to the full algebra.
tilted = projector_from_vector(np.array([0.0, 1.0, 1.0]) / np.sqrt(2))
print(f"subspace of the orthocomplement is a member: {alg.contains(tilted)}")

# --- joint state space of a singlet pair ------------------------------------

up = projector_from_vector(np.array([1.0, 0.0]))
down = projector_from_vector(np.array([0.0, 1.0]))
joint = composite_generating_set([[up, down], [up, down]])

singlet = np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)
probs = joint_distribution(singlet, joint)
print("\nsinglet joint distribution over (factor0, factor1) labels:")
for (labels, _), p in zip(joint, probs):
    print(f"  {labels}: {p:.3f}")
print("zero-probability combinations stay in the state space, so the label")
print("set never changes cardinality as weights move.")
