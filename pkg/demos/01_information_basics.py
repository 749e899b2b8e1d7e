"""Information quantities and network projections on a three-variable table.

Run: python3 demos/01_information_basics.py
"""
import numpy as np

from mvib import JointTable, Variable
from mvib.core_prob import conditional_mutual_information, multi_information, mutual_information, to_bits
from mvib.graph import DagStructure, divergence_from_network, kl_projection, network_information

# a noisy chain A -> B -> C, plus a small direct A -> C effect
pa = np.array([0.6, 0.4])
pb_a = np.array([[0.9, 0.1], [0.2, 0.8]])
pc_ab = np.array([[[0.85, 0.15], [0.3, 0.7]], [[0.75, 0.25], [0.2, 0.8]]])
p = pa[:, None, None] * pb_a[:, :, None] * pc_ab
joint = JointTable([Variable("A", 2), Variable("B", 2), Variable("C", 2)], p)

print(f"I(A;B)      = {to_bits(mutual_information(joint, ['A'], ['B'])):.4f} bits")
print(f"I(A;C|B)    = {to_bits(conditional_mutual_information(joint, ['A'], ['C'], ['B'])):.4f} bits")
print(f"multi-info  = {to_bits(multi_information(joint)):.4f} bits")

# the chain misses only the direct A -> C dependence
chain = DagStructure.from_edges(("A", "B", "C"), [("A", "B"), ("B", "C")])
print(f"I^G (chain) = {to_bits(network_information(joint, chain)):.4f} bits")
print(f"D(P||chain) = {to_bits(divergence_from_network(joint, chain)):.4f} bits  (the CMI above)")

q = kl_projection(joint, chain)
print(f"after projection, I(A;C|B) = {conditional_mutual_information(q, ['A'], ['C'], ['B']):.2e} nats")
