# Test package for tar-limits
