from frackin import logging

logging.setup()
