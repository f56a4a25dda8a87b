"""Rough-path driven Navier-Stokes laboratory on the flat torus.

Subpackages mirror the building blocks of the lab:

* :mod:`roughns.roughpath` -- sampled drivers, level-2 lifts, p-variation, controls
* :mod:`roughns.spectral` -- Fourier fields and vector calculus on the torus
* :mod:`roughns.drivers` -- transport vector fields and the operators built from them
* :mod:`roughns.solver` -- Galerkin vorticity/mean solver and velocity-form twin
* :mod:`roughns.analysis` -- remainders, sewing, pressure, balance and convergence studies
* :mod:`roughns.cli` -- batch experiment runner
"""

__version__ = "0.1.0"
