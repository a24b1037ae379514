import itertools

from core_model.rate_program import Skeleton

from .models import TinyInstanceGuard


def subchannel_choices(cfg, canonical=False):
    """
    Options for one subchannel in skeleton order: idle first, then every
    (user, RRH bitmask). With `canonical` a user always gets a nonempty mask.
    """
    first_mask = 1 if canonical else 0
    return [(-1, 0)] + [(k, mask) for k in range(cfg.num_users) for mask in range(first_mask, 2 ** cfg.num_rrhs)]


def enumerate_skeletons(cfg, guard=None, canonical=False):
    """Yield every skeleton of the instance once, in increasing sort_key order."""
    (guard or TinyInstanceGuard()).check(cfg)
    choices = subchannel_choices(cfg, canonical=canonical)
    for combo in itertools.product(choices, repeat=cfg.num_subchannels):
        users, masks = zip(*combo) if combo else ((), ())
        yield Skeleton(users=users, masks=masks)
