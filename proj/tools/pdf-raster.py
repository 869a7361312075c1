#!/usr/bin/env python3
"""pdftoppm-compatible rasterizer backed by PyMuPDF.

Supports the subset of pdftoppm flags the sandbox uses:

    pdf-raster.py -r DPI [-f N] [-l N] [-gray] -singlefile IN.pdf OUTPREFIX

Writes OUTPREFIX.ppm (or .pgm with -gray). Transparency is flattened onto
white.
"""

import sys


def main(argv):
    dpi = 150
    gray = False
    first = 1
    positional = []
    it = iter(argv)
    for arg in it:
        if arg == "-r":
            dpi = float(next(it))
        elif arg == "-f":
            first = int(next(it))
        elif arg == "-l":
            next(it)
        elif arg == "-gray":
            gray = True
        elif arg in ("-singlefile", "-aa", "-aaVector"):
            if arg != "-singlefile":
                next(it)
        elif arg.startswith("-"):
            print(f"pdf-raster: unsupported flag {arg}", file=sys.stderr)
            return 99
        else:
            positional.append(arg)
    if len(positional) != 2:
        print("usage: pdf-raster.py -r DPI [-gray] -singlefile IN.pdf OUTPREFIX", file=sys.stderr)
        return 99

    import pymupdf

    src, prefix = positional
    try:
        doc = pymupdf.open(src, filetype="pdf")
        page = doc[first - 1]
        cs = pymupdf.csGRAY if gray else pymupdf.csRGB
        zoom = dpi / 72.0
        pix = page.get_pixmap(matrix=pymupdf.Matrix(zoom, zoom), colorspace=cs, alpha=False)
    except Exception as exc:  # corrupt input, missing page
        print(f"pdf-raster: {exc}", file=sys.stderr)
        return 1
    ext = "pgm" if gray else "ppm"
    with open(f"{prefix}.{ext}", "wb") as fh:
        fh.write(pix.tobytes(ext))
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
