"""Test package for psslab."""
