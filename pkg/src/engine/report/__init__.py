"""
Report emission: CSV tables, JSON traces and SVG plots.
"""

from .export import ReportExporter

__all__ = ['ReportExporter']
