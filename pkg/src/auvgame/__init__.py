"""Online actor-critic station keeping of a 6-DOF underwater vehicle as a zero-sum game."""
