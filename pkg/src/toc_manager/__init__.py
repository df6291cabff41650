"""ToC Manager - infrastructure-assisted ToC/MRM simulator and analysis toolkit."""

__version__ = "0.1.0"
