"""Task-based synthesis of modular manipulator compositions."""
__version__ = "0.1.0"
