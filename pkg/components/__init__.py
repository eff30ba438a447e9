"""
Components module for the report viewer
Reusable UI components
"""

from .sidebar import render_sidebar
from .metrics import render_kpi_cards, render_metric_card, render_cost_breakdown
from .tables import render_data_table, render_styled_table

__all__ = [
    'render_sidebar',
    'render_kpi_cards',
    'render_metric_card',
    'render_cost_breakdown',
    'render_data_table',
    'render_styled_table',
]
