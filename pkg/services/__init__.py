"""
Computation services: losses, Fisher estimation, spectra and the exploration walk
"""
