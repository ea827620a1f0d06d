"""Dataset builds and the reproducible report harness."""
