# Ingest package
# Contains sample manifest, region map and VCF streaming
