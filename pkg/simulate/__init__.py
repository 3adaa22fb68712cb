# Simulate package
# Contains seeded samplers, null-model generators and the frequency table format
