"""Mock implementations used by the tests."""
