#pragma once

#include "psltd/classifier.hpp"
#include "psltd/config.hpp"
#include "psltd/corpus.hpp"
#include "psltd/descriptor.hpp"
#include "psltd/features.hpp"
#include "psltd/gabor.hpp"
#include "psltd/image.hpp"
#include "psltd/image_io.hpp"
#include "psltd/imaging.hpp"
#include "psltd/patterns.hpp"
#include "psltd/pipeline.hpp"
#include "psltd/svm.hpp"
#include "psltd/synthgen.hpp"
