"""Prompt template text assets; see reasonctl.backends.prompts for rendering."""
