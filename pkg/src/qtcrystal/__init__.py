"""Simulation and diagnostics for spontaneously broken time translations.

Three models are provided: a Heisenberg ferromagnet precessing in a field
(:mod:`qtcrystal.spin`), a flux-threaded ring with a linear coupling
(:mod:`qtcrystal.ring`) and N independent or pair-coupled rings
(:mod:`qtcrystal.many_ring`). :mod:`qtcrystal.ssb` holds the order-parameter,
cluster, variance and period diagnostics; :mod:`qtcrystal.cli` runs
declarative scenarios.
"""

__version__ = "0.1.0"
