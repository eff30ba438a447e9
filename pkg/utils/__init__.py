"""
Utils module for the crossbar simulator
Utilization and cost accounting, baseline runs, report files and figures
"""
