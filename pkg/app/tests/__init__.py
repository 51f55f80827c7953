"""
Tests package for the entanglement verification toolkit.
"""
