"""
Simulator module
Crossbar state machine, in-array logic, pipeline scheduling and inference
"""
