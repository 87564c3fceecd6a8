"""Test suite for murssl."""
