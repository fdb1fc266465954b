"""Six-DOF spacecraft rendezvous guidance toolkit.

Plans fuel-optimal impulsive maneuvers coupled with reaction-wheel attitude
trajectories (B-spline flat output), then flies them closed-loop with a
linearized MPC against a nonlinear disturbed plant.
"""

__version__ = "0.1.0"
