"""Command-line front end for quantum-current-statistics."""
