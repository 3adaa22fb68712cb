# Config package
# Contains environment-backed scan and simulation settings
