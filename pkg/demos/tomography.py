"""Reading out a full three-spin density matrix.

A single FID only shows the single-quantum coherences that precess at the
twelve line frequencies.  Tomography repeats the experiment after different
readout pulses (one letter per spin: 1 = nothing, x or y = a 90 degree
pulse about that axis) and fits each FID to the known lines.  Seven
readouts fix all 63 traceless product-operator coefficients.
"""
import numpy as np

from spinsim import engine, measure, seqlib
from spinsim.core import single_spin_operator, traceless_part
from spinsim.hamiltonian import alanine, liquid_hamiltonian
from spinsim.pulseprog import compile_program
from spinsim.verify import random_density_matrix

sys = alanine()
print("readout set:", " ".join(measure.TOMOGRAPHY_READOUTS))
freqs, dwell, npoints = measure.acquisition_plan(sys)
print(f"{len(freqs)} lines, dwell {dwell * 1e6:.2f} us, {npoints} points per FID")

rng = np.random.default_rng(3)
rho = random_density_matrix(rng, 3)
res = measure.tomography(rho, sys)
print(f"\nrandom state: max reconstruction error {np.abs(res.rho - rho).max():.2e}")

# the pseudo-pure preparation from cnot_and_pseudo_pure.py, checked by tomography
H = liquid_hamiltonian(sys)
eps = 1e-3
rho0 = np.eye(8) / 8 + eps * single_spin_operator("Z", 0, 3)
prepared = engine.evolve(rho0, compile_program(seqlib.pseudo_pure_sequence(sys), sys, H))
res = measure.tomography(prepared, sys)
print("\npseudo-pure preparation, largest coefficients (units of eps):")
big = sorted(((k, v) for k, v in res.coefficients.items() if k != "111"), key=lambda kv: -abs(kv[1]))[:4]
for key, value in big:
    print(f"  {key}  {value / eps:+.6f}")
print("deviation block (real part, units of eps):")
print(np.round(traceless_part(res.rho).real / eps, 4) + 0.0)
