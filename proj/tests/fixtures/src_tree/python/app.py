import logging

logger = logging.getLogger(__name__)


def spawn(vm, iid, secs, cfg, user, name):
    logger.info("VM took %f seconds to spawn.", secs)
    logger.debug("spawning vm %s", vm)
    # logger.error("commented out call")
    logger.error("Instance failed to spawn: %s" % iid)
    logging.warning("low disk space")
    logger.info("Starting compute "
                "service")
    logger.critical("Cannot reach database at %(host)s", cfg)
    logger.info(f"user {user} logged in")
    logger.info("%s", name)
    x = compute(vm)
    logger.exception("Unexpected failure in worker")
    return x
