"""
Report Loading and Caching
Reads the files the CLI writes into an output directory for the viewer
"""

from pathlib import Path

import pandas as pd
import streamlit as st
import ujson

import config

REPORT_FILES = {
    'summary': 'summary.json',
    'trace': 'trace.csv',
    'spatial': 'spatial.csv',
    'cycles': 'cycles.csv',
    'floorplan': 'floorplan.csv',
    'comparison': 'comparison.csv',
    'array_size': 'array_size.csv',
    'adc_tradeoff': 'adc_tradeoff.csv',
}


@st.cache_data(ttl=config.CACHE_TTL)
def load_report(report_type, out_dir=config.DEFAULT_OUTPUT_DIR):
    """
    Load one report file with caching

    Args:
        report_type (str): Key of REPORT_FILES
        out_dir (str): CLI output directory

    Returns:
        pd.DataFrame or dict: File contents, None when the file was not written
    """

    if report_type not in REPORT_FILES:
        raise ValueError(f"Unknown report_type: {report_type}")
    path = Path(out_dir) / REPORT_FILES[report_type]
    if not path.exists():
        return None
    if path.suffix == '.json':
        return ujson.loads(path.read_text(encoding='utf-8'))
    return pd.read_csv(path)


def available_reports(out_dir=config.DEFAULT_OUTPUT_DIR):
    """Report keys present in an output directory"""
    return [key for key, name in REPORT_FILES.items() if (Path(out_dir) / name).exists()]
