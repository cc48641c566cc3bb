"""Desk-scale autonomous-vehicle workbench.

Subpackages:
    diffcalc  - dense matrices, MLPs, analytic backprop, Adam
    sim2d     - occupancy grids, LiDAR ray casting, vehicle/ACC plants, races
    flowloc   - invertible-network localizer with uncertainty estimation
    fusion    - EKF pose fusion and a particle-filter baseline
    objplan   - game-theoretic planning in (aggressiveness, restraint) space
    safectrl  - CBF safe sets, QP filters, gauge maps, safe NN controllers
    cli       - experiment harness, config, metrics, reports
"""

__version__ = "0.1.0"
