"""
OAMSIM Test Suite
"""
