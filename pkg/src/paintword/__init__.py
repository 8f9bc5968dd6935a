"""paintword: paint-by-word image editing over split generator latents."""

__version__ = "0.1.0"
