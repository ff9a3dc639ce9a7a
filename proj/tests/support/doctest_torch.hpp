#pragma once

// libtorch's logging header defines CHECK and friends; drop them so the
// doctest assertions are the ones in scope.
#include <torch/torch.h>

#undef CHECK
#undef CHECK_EQ
#undef CHECK_NE
#undef CHECK_LE
#undef CHECK_LT
#undef CHECK_GE
#undef CHECK_GT

#include "doctest.h"
