#pragma once

#include "naglab/errors.hpp"
#include "naglab/matrix.hpp"
#include "naglab/linalg.hpp"
#include "naglab/random.hpp"
#include "naglab/models.hpp"
#include "naglab/optimizers.hpp"
#include "naglab/dynamics.hpp"
#include "naglab/theory.hpp"
#include "naglab/harness.hpp"
#include "naglab/io.hpp"
