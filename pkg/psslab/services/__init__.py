"""Analysis, simulation and lab services."""
