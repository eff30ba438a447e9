"""
Table Components - Report tables
"""

import streamlit as st


def render_data_table(data, title=None, height=400):
    """
    Render a basic data table

    Args:
        data (pd.DataFrame): Data to display
        title (str): Optional table title
        height (int): Table height in pixels
    """

    if title:
        st.markdown(f"### {title}")
    if data is None or data.empty:
        st.info("No data available")
        return
    st.dataframe(data, use_container_width=True, height=height, hide_index=True)


def render_styled_table(data, title=None, color_column=None, decimals=3):
    """Table with a gradient on one column and fixed-precision floats"""

    if title:
        st.markdown(f"### {title}")
    if data is None or data.empty:
        st.info("No data available")
        return
    styled = data.style
    if color_column and color_column in data.columns:
        styled = styled.background_gradient(subset=[color_column], cmap='RdYlGn',
                                            vmin=data[color_column].min(), vmax=data[color_column].max())
    floats = data.select_dtypes(include=['float64']).columns
    styled = styled.format({col: f'{{:.{decimals}f}}' for col in floats}, na_rep='-')
    st.dataframe(styled, use_container_width=True, hide_index=True)
