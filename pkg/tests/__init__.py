"""
bscalc Tests Package
"""
