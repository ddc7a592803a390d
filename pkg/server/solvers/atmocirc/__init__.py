"""
atmocirc - 2D moist Boussinesq channel simulator with energy and weak-form diagnostics
"""

__version__ = "0.1.0"
