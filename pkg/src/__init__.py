"""Main source package for murssl."""
