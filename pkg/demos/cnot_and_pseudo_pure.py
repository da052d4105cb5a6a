"""A controlled-NOT on two alanine carbons, then a pseudo-pure state.

The CNOT is a 90 degree pulse on the target, a delay of 1/(2J) during which
all other couplings and all shifts are refocused, and a few single-spin
rotations.  Two of them combined with three gradient pulses turn the
thermal-like deviation Z_a into X_a times the projector onto |00> of the
other two spins.
"""
import numpy as np

from spinsim import engine, seqlib
from spinsim.core import (
    cnot_matrix,
    embed_two_spin,
    expand_product_basis,
    gate_fidelity,
    single_spin_operator,
    state_fidelity,
    traceless_part,
)
from spinsim.hamiltonian import alanine, liquid_hamiltonian
from spinsim.pulseprog import Delay, compile_program, net_propagator

np.set_printoptions(precision=3, suppress=True, linewidth=120)

sys = alanine()
H = liquid_hamiltonian(sys)

cnot = seqlib.cnot_sequence("a", "b", sys)
delay = sum(ev.t_s for ev in cnot if isinstance(ev, Delay))
print(f"CNOT(a -> b): {len(cnot)} events, total free evolution {delay * 1e3:.4f} ms = 1/(2 J_ab)")
U = net_propagator(compile_program(cnot, sys, H))
target = embed_two_spin(cnot_matrix(), 0, 1, 3)
print(f"  gate fidelity {gate_fidelity(U, target):.15f}")

# a 2 Hz error in J_ab leaves a visible infidelity
off = sys.with_j("a", "b", sys.j("a", "b") + 2.0)
U_off = net_propagator(compile_program(cnot, off, liquid_hamiltonian(off)))
print(f"  with J_ab off by 2 Hz:  fidelity {gate_fidelity(U_off, target):.6f}")

# gradient phases on the a coherence: one row per up/down pattern of the
# three spins, giving the three interval contributions and their total in
# units of the largest gradient area.  Only rows with b and c both up (the
# "x++" rows) total zero, so only that part of X_a survives the average
# over the sample
pp = seqlib.pseudo_pure_sequence(sys)
table = seqlib.gradient_phase_table(pp, sys, H)
print("\ngradient phase bookkeeping for the a coherence:")
for row, (parts, total) in table.items():
    print(f"  {row}  {np.round(parts, 12)}  total {total:+.1f}")

eps = 1e-3
rho0 = np.eye(8) / 8 + eps * single_spin_operator("Z", 0, 3)
rho = engine.evolve(rho0, compile_program(pp, sys, H))
dev = traceless_part(rho)
print("\ndeviation after preparation, in the product basis:")
for key, value in sorted(expand_product_basis(dev / eps, 1e-9).items()):
    print(f"  {key}  {value.real:+.4f}")

up = np.diag([1.0, 0.0])
want = np.kron(single_spin_operator("X", 0, 1), np.kron(up, up))
print(f"fidelity with X_a |00><00|: {state_fidelity(dev, want):.12f}")
