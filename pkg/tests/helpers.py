from tools.layout_hash_tool import BoundingBox
from utils.data_utils import Document, OcrToken


def make_document(doc_id, items):
    """items: (text, (x_min, y_min, x_max, y_max)) pairs."""
    return Document(id=doc_id, tokens=tuple(OcrToken(text, BoundingBox(*box)) for text, box in items))
