"""
Core Package

Settings, logging and the application exception hierarchy.
"""
