"""
Visualization Utilities
Plotly figures over report files: trade-off curves, mode comparison, timelines
"""

import numpy as np
import pandas as pd
import plotly.express as px
import plotly.graph_objects as go

import config


def create_line_chart(data, x, y, color=None, title='', x_label='', y_label='', **kwargs):
    """
    Create an interactive line chart

    Args:
        data (pd.DataFrame): Input data
        x (str): Column for x-axis
        y (str or list): Column(s) for y-axis
        color (str or None): Column for color grouping or color hex

    Returns:
        plotly.graph_objs.Figure: Line chart figure
    """

    single = isinstance(color, str) and color.startswith('#')
    fig = px.line(data, x=x, y=y, color=None if single else color, title=title, markers=True, **kwargs)
    if single:
        fig.update_traces(line_color=color)
    fig.update_layout(xaxis_title=x_label, yaxis_title=y_label, template='plotly_white', hovermode='x unified')
    return fig


def create_bar_chart(data, x, y, color=None, title='', x_label='', y_label='', barmode='group', **kwargs):
    fig = px.bar(data, x=x, y=y, color=color, title=title, barmode=barmode, **kwargs)
    fig.update_layout(xaxis_title=x_label, yaxis_title=y_label, template='plotly_white')
    return fig


def array_size_chart(study: pd.DataFrame):
    """Spatial utilization against unit array size"""
    return create_line_chart(
        study, x='array_size', y=['spatial_aggregate', 'spatial_mean'],
        title='Unit array size vs. spatial utilization',
        x_label='Array size (rows = cols)', y_label='Spatial utilization',
    )


def adc_chart(adc: pd.DataFrame):
    """Power and area ratios of small-array ADCs, one bar group per array size"""
    return create_bar_chart(
        adc.melt(id_vars=['array_size'], value_vars=['power_ratio', 'area_ratio']),
        x='array_size', y='value', color='variable',
        title='ADC cost of small-array tilings vs. one 512×512 array',
        x_label='Array size', y_label='Ratio',
    )


def comparison_chart(table: pd.DataFrame, metric: str = 'speedup'):
    """One bar per mode for a comparison-table column"""
    colors = [config.COLOR_SCHEME['hurry'] if mode == 'hurry' else config.COLOR_SCHEME['baseline']
              for mode in table['mode']]
    fig = go.Figure(go.Bar(x=table['mode'], y=table[metric], marker_color=colors))
    fig.update_layout(title=metric.replace('_', ' ').capitalize(), template='plotly_white',
                      xaxis_title='Mode', yaxis_title=metric)
    return fig


def activity_chart(trace: pd.DataFrame, array_cells: int, bins: int = 500):
    """
    Temporal utilization over the run, averaged into bins

    Args:
        trace (pd.DataFrame): Trace intervals
        array_cells (int): Cells of all arrays in the run
        bins (int): Points on the curve
    """

    total = int(trace['end'].max()) if len(trace) else 0
    diff = np.zeros(total + 1)
    active = trace[trace['activated_cells'] > 0]
    np.add.at(diff, active['start'].to_numpy(), active['activated_cells'].to_numpy())
    np.add.at(diff, active['end'].to_numpy(), -active['activated_cells'].to_numpy())
    per_cycle = np.cumsum(diff)[:total] / max(array_cells, 1)
    edges = np.linspace(0, total, min(bins, max(total, 1)) + 1).astype(int)
    points = pd.DataFrame({
        'cycle': edges[:-1],
        'utilization': [per_cycle[a:b].mean() if b > a else 0.0 for a, b in zip(edges[:-1], edges[1:])],
    })
    return create_line_chart(points, x='cycle', y='utilization', color=config.COLOR_SCHEME['primary'],
                             title='Temporal utilization', x_label='Cycle', y_label='Activated cells / array cells')


def timeline_chart(trace: pd.DataFrame, ima: int, limit: int = 2000):
    """Phase intervals of one IMA as horizontal bars"""
    rows = trace[trace['ima'] == ima].sort_values('start').head(limit)
    palette = {'load_input': config.COLOR_SCHEME['secondary'], 'compute': config.COLOR_SCHEME['primary'],
               'write_output': config.COLOR_SCHEME['success']}
    fig = go.Figure()
    for phase, group in rows.groupby('phase'):
        fig.add_trace(go.Bar(
            y=group['fb_id'].astype(str), x=group['end'] - group['start'], base=group['start'],
            orientation='h', name=phase, marker_color=palette.get(phase),
        ))
    fig.update_layout(title=f'IMA {ima} schedule', barmode='overlay', template='plotly_white',
                      xaxis_title='Cycle', yaxis_title='FB')
    return fig
