"""qp-spectra: a numerical laboratory for multi-frequency quasi-periodic
Schrödinger operators on the lattice.

Submodules
----------
torus         points/frequencies on T^d, Diophantine checks, phase sampling
operator      potentials, Dirichlet determinants, transfer cocycles, eigensolver
lyapunov      finite-volume Lyapunov exponents, avalanche-principle machinery
ldt           large-deviation measurements, Green's functions, Wegner fractions
localization  eigenvector localization, separation, multiscale stabilization
resonance     NDR scans, lacunary ladders, double-resonance statistics
prep          zero counting, Weierstrass preparation, resultants
intervals     exact interval-set algebra
spectrum      restricted spectrum sets, inclusion/excess and homogeneity reports
cli           batch experiment driver
"""

__version__ = "0.1.0"
