"""Channel conventions and the speller matrix shared by the converters."""

# BCI2000 64-channel montage order (10-10 names), as used by both the
# P300 competition recordings and the PhysionetMI exports.
CHANNEL_ORDER_64 = (
    "FC5", "FC3", "FC1", "FCz", "FC2", "FC4", "FC6",
    "C5", "C3", "C1", "Cz", "C2", "C4", "C6",
    "CP5", "CP3", "CP1", "CPz", "CP2", "CP4", "CP6",
    "Fp1", "Fpz", "Fp2",
    "AF7", "AF3", "AFz", "AF4", "AF8",
    "F7", "F5", "F3", "F1", "Fz", "F2", "F4", "F6", "F8",
    "FT7", "FT8", "T7", "T8", "T9", "T10", "TP7", "TP8",
    "P7", "P5", "P3", "P1", "Pz", "P2", "P4", "P6", "P8",
    "PO7", "PO3", "POz", "PO4", "PO8",
    "O1", "Oz", "O2", "Iz",
)

# Standard 6x6 speller matrix; columns flash as codes 1..6, rows as 7..12.
MATRIX_ROWS = ("ABCDEF", "GHIJKL", "MNOPQR", "STUVWX", "YZ1234", "56789_")


def target_codes(symbol: str) -> tuple[int, int]:
    """(row_code, col_code) of a matrix symbol."""
    for r, row in enumerate(MATRIX_ROWS):
        c = row.find(symbol)
        if c >= 0:
            return r + 7, c + 1
    raise KeyError(f"symbol {symbol!r} not in the speller matrix")
