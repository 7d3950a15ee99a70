"""Pipeline supervisor: runs the PRISM stages in order and assembles the report."""
