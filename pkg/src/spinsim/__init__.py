"""Dense density-matrix simulation of NMR quantum-information experiments.

Modules
-------
core         product operators, Pauli algebra, states and fidelities
hamiltonian  spin systems, internal Hamiltonians and rotations
pulseprog    the pulse-program language and its compiler
engine       propagation, crushers and relaxation
aht          toggling frames and average Hamiltonians
seqlib       standard sequences (refocusing, CNOT, pseudo-pure, WAHUHA)
measure      FIDs, spectra and state tomography
"""
from .core import PauliString, gate_fidelity, state_fidelity, thermal_state
from .hamiltonian import SpinSystem, alanine, internal_hamiltonian, liquid_hamiltonian, solid_hamiltonian
from .pulseprog import PulseProgram, compile_program, net_propagator, parse
from .engine import KiteModel, evolve, simulate
from .aht import average_hamiltonian, magnus, toggling_frames
from .measure import acquire, spectrum, tomography

__version__ = "0.1.0"

__all__ = [
    "PauliString", "gate_fidelity", "state_fidelity", "thermal_state",
    "SpinSystem", "alanine", "internal_hamiltonian", "liquid_hamiltonian", "solid_hamiltonian",
    "PulseProgram", "compile_program", "net_propagator", "parse",
    "KiteModel", "evolve", "simulate",
    "average_hamiltonian", "magnus", "toggling_frames",
    "acquire", "spectrum", "tomography",
]
