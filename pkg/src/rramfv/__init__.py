"""Finite-volume simulation of filament forming and resistive switching in
Ta2O5/TaOx bilayer memristors."""

__version__ = "0.1.0"
