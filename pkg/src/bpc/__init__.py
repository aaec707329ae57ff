"""Simulation and control synthesis for a viscous Burgers fluid coupled to a point particle."""
