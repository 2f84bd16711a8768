"""Test package for adkit."""
