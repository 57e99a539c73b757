"""Cubical meshes of T^2 x I and the discrete optimization problems on them."""
