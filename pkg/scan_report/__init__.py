# Scan Report package
# Contains result rows, the ordered worker pool, significance tracking, calibration and plot exports
