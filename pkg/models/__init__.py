"""
Simulation models and the ensemble runner
"""
