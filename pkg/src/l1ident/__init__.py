"""Local identifiability of complete dictionaries under l1-minimization."""
