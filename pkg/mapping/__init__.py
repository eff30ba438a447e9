"""
Mapping module
Floorplanning, size balancing and intra-block data layout
"""
